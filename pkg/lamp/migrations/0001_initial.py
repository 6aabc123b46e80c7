# Generated by Django 6.0.1 on 2026-10-19 09:00

import django.core.serializers.json
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='Run',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
                ('command', models.CharField(choices=[('audit', 'Entropy audit'), ('pretrain', 'Pre-training'), ('embed', 'Embedding export'), ('eval', '10-fold evaluation'), ('sweep', 'Hyper-parameter sweep')], max_length=20)),
                ('status', models.CharField(choices=[('succeeded', 'Succeeded'), ('failed', 'Failed')], default='succeeded', max_length=20)),
                ('dataset_name', models.CharField(blank=True, max_length=100)),
                ('seed', models.BigIntegerField(default=0)),
                ('config', models.JSONField(blank=True, default=dict, encoder=django.core.serializers.json.DjangoJSONEncoder)),
                ('manifest', models.JSONField(blank=True, default=dict, encoder=django.core.serializers.json.DjangoJSONEncoder)),
                ('out_dir', models.CharField(blank=True, max_length=500)),
                ('wall_clock_seconds', models.FloatField(default=0.0)),
                ('error', models.TextField(blank=True)),
            ],
            options={
                'ordering': ['-created_at', '-id'],
            },
        ),
    ]
